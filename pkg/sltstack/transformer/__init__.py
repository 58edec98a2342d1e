# Transformer Module
