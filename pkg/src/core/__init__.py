# Core modules
from . import log_handling
from . import file_handling
