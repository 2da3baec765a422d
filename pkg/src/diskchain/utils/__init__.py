from diskchain.utils.utils import checksum, load_settings, pool_map, validate_config

__all__ = [
    "checksum",
    "load_settings",
    "pool_map",
    "validate_config",
]
