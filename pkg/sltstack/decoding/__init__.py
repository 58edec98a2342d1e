# Decoding Module
