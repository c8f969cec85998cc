import base64
import json
import os

import hypothesis
import pytest

from linkscrub.cli.synthetic import SyntheticConfig, generate_synthetic, write_corpus
from linkscrub.graph.pipeline import page_graph
from linkscrub.traces.io import parse_trace

hypothesis.settings.register_profile("fast", max_examples=20, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=1000, deadline=None)
hypothesis.settings.load_profile(os.environ.get("LINKSCRUB_HYPOTHESIS_PROFILE", "fast"))

SITE = "example.com"
PAGE_URL = "https://www.example.com/"
SCRIPT_URL = "https://www.example.com/js/app.js"
INFO_VALUE = "a1b2c3d4e5f6"
UID_VALUE = "UID123UID123"
UID_BASE64 = base64.b64encode(UID_VALUE.encode()).decode()

# a script reads a cookie, syncs it, stores the returned id and sends it on plain and base64 encoded
SYNC_EVENTS = [
    ("script_load", {"url": SCRIPT_URL, "length": 1200}),
    ("storage_get", {"store": "cookie", "key": "info", "value": INFO_VALUE}),
    ("request", {"request_id": "r1", "url": f"https://tracker1.example/sync?info={INFO_VALUE}"}),
    ("response", {"request_id": "r1", "body": json.dumps({"uid": UID_VALUE})}),
    ("storage_set", {"store": "cookie", "key": "uid", "value": UID_VALUE}),
    ("request", {"request_id": "r2", "url": f"https://tracker2.example/p/{UID_VALUE}/pixel.gif?src=example"}),
    ("request", {"request_id": "r3", "url": f"https://tracker3.example/collect?uid={UID_BASE64}#ref=example"}),
    ("response", {"request_id": "r2"}),
    ("response", {"request_id": "r3"}),
]


def trace_lines(events, trace_id="sync-trace", site=SITE, page_url=PAGE_URL, actor="s1"):
    lines = [json.dumps({"format": 1, "trace_id": trace_id, "site": site, "page_url": page_url})]
    lines.extend(
        json.dumps({"seq": seq, "kind": kind, "page_url": page_url, "site": site, "actor": actor, "payload": payload})
        for seq, (kind, payload) in enumerate(events, start=1)
    )
    return "\n".join(lines) + "\n"


def acceptance_scale() -> float:
    return float(os.environ.get("LINKSCRUB_ACCEPTANCE_SCALE", "0.1"))


@pytest.fixture
def sync_text():
    return trace_lines(SYNC_EVENTS)


@pytest.fixture
def sync_trace(sync_text):
    return parse_trace(sync_text)


@pytest.fixture
def sync_graph(sync_trace):
    return page_graph(sync_trace)


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic(SyntheticConfig(sites=6, seed=7))


@pytest.fixture
def corpus_dir(small_corpus, tmp_path):
    write_corpus(small_corpus, tmp_path / "corpus")
    return tmp_path / "corpus"
