from driftreset.kernels import BACKEND
