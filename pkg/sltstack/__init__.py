# SLT Stack Package
