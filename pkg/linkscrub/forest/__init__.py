from linkscrub.forest.config import *
from linkscrub.forest.dataset import *
from linkscrub.forest.tree import *
from linkscrub.forest.forest import *
from linkscrub.forest.evaluation import *
from linkscrub.forest.importance import *
from linkscrub.forest.persistence import *
