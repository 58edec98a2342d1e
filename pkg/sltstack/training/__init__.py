# Training Module
