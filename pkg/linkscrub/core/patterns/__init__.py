from linkscrub.core.patterns.context_managers import *
from linkscrub.core.patterns.error_wrapper import *
