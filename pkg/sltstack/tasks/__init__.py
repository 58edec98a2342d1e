# Synthetic Tasks Module
