from .config import PROFILES, ConfigKeyError, default_config, dump_config, load_config, merge
from .main import build_parser, main

__all__ = ["PROFILES", "ConfigKeyError", "default_config", "dump_config", "load_config", "merge", "build_parser", "main"]
