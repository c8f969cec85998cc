import csv
import io
import logging
import string
from pathlib import Path
from typing import Dict, List, Optional, Set
from urllib.parse import quote

import numpy as np
from pydantic import confloat, conint, constr, validator

from linkscrub.core.exceptions import ParsingError
from linkscrub.core.models import BaseModel, FrozenModel
from linkscrub.core.patterns import ErrorWrapper
from linkscrub.graph.flows import encode_candidates
from linkscrub.graph.models import Encoding
from linkscrub.labels.labeling import labels_from_map, write_labels
from linkscrub.labels.models import Label, LabeledDecoration, Purpose
from linkscrub.traces.io import write_traces
from linkscrub.traces.models import EventKind, StoreKind, Trace, TraceEvent
from linkscrub.urls.models import DecorationId, DecorationKind, fragment_key, path_key, query_key
from linkscrub.urls.parsing import decorations_of
from linkscrub.urls.rules import ANY

logger = logging.getLogger(__name__)

SITE_WORDS = ["shop", "news", "recipes", "travel", "weather", "forum", "music", "garden", "cinema", "library"]
TRACKER_NAMES = ["adnet", "adsrv", "trackly", "pixelhub", "syncpoint", "bannerly", "admetric", "trackcore"]
TRACKER_KEYS = ["uid", "tid", "cid", "vid", "puid", "bid", "gid", "xid"]
TRACKER_SCRIPT_WORDS = ["ads", "pixel", "track", "sync", "advert"]
FINGERPRINT_WORDS = ["canvas", "webgl", "fingerprint"]

FUNCTIONAL_PATHS = ["api", "v2", "items", "goods", "search", "catalog", "blog", "static", "media", "user"]
FUNCTIONAL_WORDS = ["home", "shoes", "books", "grid", "list", "red", "blue", "small", "large", "news", "view", "menu"]
FUNCTIONAL_VALUES = {
    "lang": ["en", "de", "fr", "es"],
    "page": [str(number) for number in range(1, 21)],
    "sort": ["asc", "desc", "new", "top"],
    "view": ["grid", "list", "full"],
    "color": ["red", "blue", "green", "black"],
    "size": ["s", "m", "l", "xl"],
    "q": FUNCTIONAL_WORDS,
    "tab": ["info", "specs", "reviews"],
    "mode": ["dark", "light"],
    "w": ["320", "640", "1280"],
}
LANGUAGES = FUNCTIONAL_VALUES["lang"]

file_errors = ErrorWrapper(error_mappings={OSError: ParsingError})


class SyntheticConfig(BaseModel):
    sites: conint(ge=1) = 20
    tracker_pool: conint(ge=1) = 8
    trackers_per_site: conint(ge=0) = 3
    tracker_requests: conint(ge=1) = 3
    functional_requests: conint(ge=0) = 4
    functional_params: conint(ge=0, le=len(FUNCTIONAL_VALUES)) = 3
    identifier_length: conint(ge=8) = 16
    alphabet: constr(min_length=2) = string.ascii_letters + string.digits
    encodings: List[Encoding] = list(Encoding)
    functional_noise: confloat(ge=0.0, le=1.0) = 0.1
    cookie_sync: confloat(ge=0.0, le=1.0) = 0.3
    seed: int = 0

    @validator("encodings")
    def some_encoding(cls, encodings: List[Encoding]) -> List[Encoding]:
        if not encodings:
            raise ValueError("at least one encoding is needed for planted identifiers")

        return encodings

    @validator("trackers_per_site")
    def pool_is_large_enough(cls, trackers_per_site: int, values) -> int:
        pool = values.get("tracker_pool")
        if pool is not None and trackers_per_site > pool:
            raise ValueError(f"trackers_per_site ({trackers_per_site}) exceeds tracker_pool ({pool})")

        return trackers_per_site


class TrackerProfile(FrozenModel):
    """A tracker host shared by every site that embeds it"""

    name: str
    host: str
    script_url: str
    storage_key: str
    store: StoreKind
    kind: DecorationKind
    param: str
    infiltration: str

    @property
    def decoration_key(self) -> str:
        if self.kind == DecorationKind.PATH:
            return path_key(0)
        elif self.kind == DecorationKind.FRAGMENT:
            return fragment_key()

        return query_key(self.param)

    def url_with(self, value: str) -> str:
        raw = quote(value, safe="")

        if self.kind == DecorationKind.PATH:
            return f"https://{self.host}/{raw}/p.gif"
        elif self.kind == DecorationKind.FRAGMENT:
            return f"https://{self.host}/p.gif#{raw}"

        return f"https://{self.host}/collect?{self.param}={raw}"


class SyntheticCorpus(BaseModel):
    traces: List[Trace] = []
    labels: Dict[DecorationId, Label] = {}
    request_rules: str = ""
    cookie_purposes: str = ""
    curated: str = ""
    planted: Set[DecorationId] = set()

    def labeled(self) -> List[LabeledDecoration]:
        return labels_from_map(self.labels)


def tracker_pool(cfg: SyntheticConfig, rng: np.random.Generator) -> List[TrackerProfile]:
    pool = []

    for index in range(cfg.tracker_pool):
        name = TRACKER_NAMES[index % len(TRACKER_NAMES)]
        if index >= len(TRACKER_NAMES):
            name = f"{name}{index // len(TRACKER_NAMES)}"

        script_path = rng.choice(TRACKER_SCRIPT_WORDS)
        if rng.random() < 0.3:
            script_path = f"{script_path}/{rng.choice(FINGERPRINT_WORDS)}"

        store = StoreKind.COOKIE if rng.random() < 0.7 else StoreKind.LOCAL_STORAGE
        styles = ["header", "body", "script"] if store == StoreKind.COOKIE else ["body", "script"]
        infiltration = str(rng.choice(styles))

        pool.append(
            TrackerProfile(
                name=name,
                host=f"px.{name}.example",
                script_url=f"https://cdn.{name}.example/{script_path}/tag.js",
                storage_key=f"_{name}_id",
                store=store,
                kind=DecorationKind(rng.choice(["query", "query", "query", "path", "fragment"])),
                param=TRACKER_KEYS[index % len(TRACKER_KEYS)],
                infiltration=infiltration,
            )
        )

    return pool


class SiteTraceBuilder:
    """Writes the events of one synthetic page visit in seq order"""

    def __init__(self, site: str, trace_id: str, rng: np.random.Generator, cfg: SyntheticConfig):
        self.site = site
        self.trace_id = trace_id
        self.page_url = f"https://www.{site}/"
        self.rng = rng
        self.cfg = cfg
        self.events: List[TraceEvent] = []
        self.labels: Dict[DecorationId, Label] = {}
        self.planted: Set[DecorationId] = set()
        self._requests = 0

    def emit(self, kind: EventKind, actor: str, **payload):
        self.events.append(
            TraceEvent(
                seq=len(self.events) + 1,
                kind=kind,
                page_url=self.page_url,
                site=self.site,
                actor=actor,
                payload=payload,
            )
        )

    def next_request_id(self) -> str:
        self._requests += 1
        return f"r{self._requests}"

    def label_url(self, url: str, label: Label):
        for decoration in decorations_of(url, self.site):
            self.labels[decoration.id] = label
            if label == Label.ATS:
                self.planted.add(decoration.id)

    def identifier(self) -> str:
        alphabet = np.array(list(self.cfg.alphabet))
        return "".join(self.rng.choice(alphabet, size=self.cfg.identifier_length))

    def encoded(self, value: str) -> str:
        encoding = Encoding(self.rng.choice([encoding.value for encoding in self.cfg.encodings]))
        return dict(encode_candidates(value))[encoding]

    def functional_value(self, key: str) -> str:
        if self.rng.random() < self.cfg.functional_noise:
            alphabet = np.array(list(self.cfg.alphabet))
            return "".join(self.rng.choice(alphabet, size=int(self.rng.integers(12, 25))))

        return str(self.rng.choice(FUNCTIONAL_VALUES[key]))

    def functional_url(self, host: str, resource: str, keys: List[str]) -> str:
        levels = int(self.rng.integers(1, 3))
        path = "/".join(str(segment) for segment in self.rng.choice(FUNCTIONAL_PATHS, size=levels, replace=False))
        query = "&".join(f"{key}={quote(self.functional_value(key), safe='')}" for key in keys)
        return f"https://{host}/{path}/{resource}" + (f"?{query}" if query else "")

    def first_party(self):
        language = str(self.rng.choice(LANGUAGES))
        self.emit(
            EventKind.SCRIPT_LOAD,
            "app",
            url=f"https://www.{self.site}/static/app.js",
            length=int(self.rng.integers(20_000, 80_000)),
        )
        self.emit(EventKind.STORAGE_SET, "app", store=StoreKind.COOKIE, key="lang", value=language)
        self.emit(EventKind.STORAGE_GET, "app", store=StoreKind.COOKIE, key="lang", value=language)

        for _ in range(self.cfg.functional_requests):
            keys = list(self.rng.choice(list(FUNCTIONAL_VALUES), size=self.cfg.functional_params, replace=False))
            url = self.functional_url(f"www.{self.site}", "index.json", keys)
            request_id = self.next_request_id()
            self.emit(EventKind.REQUEST, "app", request_id=request_id, url=url)
            self.emit(EventKind.RESPONSE, "app", request_id=request_id, status=200)
            self.label_url(url, Label.NON_ATS)

        self.emit(EventKind.ELEMENT_CREATE, "app", element_id="hero", tag="img")
        url = self.functional_url(f"img.{self.site}", "photo.jpg", ["w"])
        request_id = self.next_request_id()
        self.emit(EventKind.ELEMENT_REQUEST, "hero", request_id=request_id, url=url)
        self.emit(EventKind.RESPONSE, "hero", request_id=request_id, status=200)
        self.label_url(url, Label.NON_ATS)

    def tracker(self, profile: TrackerProfile, partners: List[TrackerProfile]):
        tag = f"{profile.name}_tag"
        self.emit(EventKind.SCRIPT_LOAD, tag, url=profile.script_url, length=int(self.rng.integers(5_000, 40_000)))

        actor = tag
        if self.rng.random() < 0.3:
            actor = f"{profile.name}_eval"
            self.emit(EventKind.EVAL_SCRIPT, actor, parent=tag, length=int(self.rng.integers(500, 5_000)))

        uid = self.identifier()
        storage = {"store": profile.store, "key": profile.storage_key, "value": uid}

        if profile.infiltration == "script":
            self.emit(EventKind.STORAGE_SET, actor, **storage)
        else:
            request_id = self.next_request_id()
            self.emit(EventKind.REQUEST, actor, request_id=request_id, url=f"https://{profile.host}/init")

            if profile.infiltration == "header":
                self.emit(EventKind.RESPONSE, actor, request_id=request_id, status=200, set_storage=[storage])
            else:
                body = f'{{"id":"{uid}"}}'
                self.emit(EventKind.RESPONSE, actor, request_id=request_id, status=200, body=body)
                self.emit(EventKind.STORAGE_SET, actor, **storage)

        self.emit(EventKind.STORAGE_GET, actor, **storage)

        for _ in range(self.cfg.tracker_requests):
            url = profile.url_with(self.encoded(uid))
            request_id = self.next_request_id()
            self.emit(EventKind.REQUEST, actor, request_id=request_id, url=url)
            self.label_url(url, Label.ATS)

            if partners and self.rng.random() < self.cfg.cookie_sync:
                partner = partners[int(self.rng.integers(0, len(partners)))]
                hop_url = partner.url_with(self.encoded(uid))
                hop_id = self.next_request_id()
                self.emit(
                    EventKind.REDIRECT,
                    actor,
                    from_request_id=request_id,
                    to_url=hop_url,
                    request_id=hop_id,
                )
                self.emit(EventKind.RESPONSE, actor, request_id=hop_id, status=200)
                self.label_url(hop_url, Label.ATS)
            else:
                self.emit(EventKind.RESPONSE, actor, request_id=request_id, status=200)

    def build(self) -> Trace:
        return Trace(trace_id=self.trace_id, site=self.site, page_url=self.page_url, events=self.events)


def _ground_truth_sources(pool: List[TrackerProfile]) -> Dict[str, str]:
    request_rules = ["! linkscrub synthetic request rules", *(f"||{profile.host}^" for profile in pool)]

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["domain", "key", "purpose"])
    writer.writerow([ANY, "lang", Purpose.FUNCTIONAL.value])
    for profile in pool:
        writer.writerow([ANY, profile.storage_key, Purpose.ADVERTISING.value])

    curated = [f"{profile.host}|{profile.decoration_key}" for profile in pool[::2]]

    return {
        "request_rules": "\n".join(request_rules) + "\n",
        "cookie_purposes": buffer.getvalue(),
        "curated": "\n".join(curated) + ("\n" if curated else ""),
    }


def generate_synthetic(cfg: Optional[SyntheticConfig] = None) -> SyntheticCorpus:
    """
    Planted corpus: tracker scripts store high-entropy identifiers and send them, plain or encoded,
    to hosts of a shared tracker pool. First-party code sends enumerable functional parameters.
    The same seed gives the same corpus.
    """
    cfg = cfg or SyntheticConfig()
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.sites + 1)
    pool = tracker_pool(cfg, np.random.default_rng(seeds[0]))
    corpus = SyntheticCorpus(**_ground_truth_sources(pool))

    for index in range(cfg.sites):
        rng = np.random.default_rng(seeds[index + 1])
        site = f"{SITE_WORDS[index % len(SITE_WORDS)]}{index}.example"
        builder = SiteTraceBuilder(site, f"synthetic-{index:04d}", rng, cfg)
        builder.first_party()

        chosen = sorted(rng.choice(len(pool), size=cfg.trackers_per_site, replace=False))
        for position in chosen:
            partners = [pool[other] for other in chosen if other != position]
            builder.tracker(pool[position], partners)

        corpus.traces.append(builder.build())
        corpus.labels.update(builder.labels)
        corpus.planted.update(builder.planted)

    logger.info(
        "Generated %d traces with %d labeled decorations, %d planted",
        len(corpus.traces),
        len(corpus.labels),
        len(corpus.planted),
    )
    return corpus


@file_errors.decorate
def write_corpus(corpus: SyntheticCorpus, directory: Path | str) -> Path:
    """
    Writes traces/ plus the ground truth sources and the constructed labels.
    Returns the traces directory.
    """
    directory = Path(directory)
    traces_dir = directory / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)
    write_traces(corpus.traces, traces_dir)

    (directory / "request_rules.txt").write_text(corpus.request_rules, encoding="utf-8")
    (directory / "cookie_purposes.csv").write_text(corpus.cookie_purposes, encoding="utf-8")
    (directory / "curated.txt").write_text(corpus.curated, encoding="utf-8")
    write_labels(corpus.labeled(), directory / "labels.csv")
    return traces_dir


__all__ = [
    "SyntheticConfig",
    "SyntheticCorpus",
    "TrackerProfile",
    "SiteTraceBuilder",
    "tracker_pool",
    "generate_synthetic",
    "write_corpus",
]
