from linkscrub.traces.models import *
from linkscrub.traces.validation import *
from linkscrub.traces.io import *
