from hypothesis import settings

# property tests must reproduce bit-for-bit across runs and platforms
settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")
