from linkscrub.urls.models import *
from linkscrub.urls.parsing import *
from linkscrub.urls.rules import *
from linkscrub.urls.sanitizer import *
from linkscrub.urls.domains import *
