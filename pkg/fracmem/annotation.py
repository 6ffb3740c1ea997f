class Check:
    name: str
    tolerance: float

    def __init__(self, name: str, tolerance: float = 0.0):
        if tolerance < 0:
            raise ValueError(f'tolerance must be nonnegative: {name}={tolerance}')
        self.name = name
        self.tolerance = tolerance
