from linkscrub.features.entropy import *
from linkscrub.features.keywords import *
from linkscrub.features.metrics import *
from linkscrub.features.extraction import *
from linkscrub.features.matrix import *
