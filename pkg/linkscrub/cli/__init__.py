from linkscrub.cli.settings import *
from linkscrub.cli.filter_list import *
from linkscrub.cli.synthetic import *
from linkscrub.cli.evasion import *
from linkscrub.cli.stats import *
from linkscrub.cli.robustness import *
