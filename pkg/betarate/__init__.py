from .errors import *  # noqa: F401,F403
from .operators import *  # noqa: F401,F403
from .specfun import *  # noqa: F401,F403
from .bayes import *  # noqa: F401,F403
from .exact_tests import *  # noqa: F401,F403
from .sequential import *  # noqa: F401,F403
from .datasets import *  # noqa: F401,F403
from .app import BenchmarkCase, BenchmarkReport, cli_dispatch, run_benchmark  # noqa: F401
