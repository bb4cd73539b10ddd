# Tests package for spconv
