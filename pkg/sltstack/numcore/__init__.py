# Numerical Core Module
