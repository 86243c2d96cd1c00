# Tensor engine, layers, optimizer and checkpoints
