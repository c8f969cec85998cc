from linkscrub.core.constants import *
from linkscrub.core.exceptions import *
from linkscrub.core.models import *
from linkscrub.core.patterns import *
from linkscrub.core.events import *
