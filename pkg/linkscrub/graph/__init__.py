from linkscrub.graph.models import *
from linkscrub.graph.builder import *
from linkscrub.graph.flows import *
from linkscrub.graph.views import *
from linkscrub.graph.dump import *
from linkscrub.graph.pipeline import *
