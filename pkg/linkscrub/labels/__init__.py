from linkscrub.labels.models import *
from linkscrub.labels.rules import *
from linkscrub.labels.sources import *
from linkscrub.labels.repository import *
from linkscrub.labels.labeling import *
