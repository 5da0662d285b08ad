from . import autodiff, checkpoint, gradcheck, layers, losses, optim  # noqa: F401
