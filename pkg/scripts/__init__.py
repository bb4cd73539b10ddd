# Scripts package for spconv utilities
