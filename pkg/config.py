MAX_STEPS = 10000   # Default chase budget (number of rule applications).
                    # The command line also honours the EDCHASE_MAX_STEPS environment variable

MINT_BASE = 2**62   # Rank offset of engine-minted symbols: @k has rank MINT_BASE + k,
                    # which keeps every minted symbol above every interned user symbol

DTYPE = 'int32'     # Integer type of encoded relations handed to the numba kernels

VERBOSE = 0         # Default verbosity of the library drivers (0, 1 or 2)

assert MAX_STEPS >= 0, "MAX_STEPS must be non-negative"
assert DTYPE in ['int32', 'int64'], "DTYPE must be either 'int32' or 'int64'"
assert VERBOSE in [0, 1, 2], "VERBOSE must be 0, 1 or 2"
