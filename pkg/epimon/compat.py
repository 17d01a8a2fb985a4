try:
    from typing import Literal, TypeAlias
except (ImportError, ModuleNotFoundError):
    from typing_extensions import Literal, TypeAlias

LossKind: TypeAlias = Literal['l1', 'l2']
FitKind: TypeAlias = Literal['dp-segments', 'min-of-lines']
SlopeModel: TypeAlias = Literal['gauss-ols', 'laplace-l1', 'combined']
Level: TypeAlias = Literal['none', 'warning', 'alarm', 'confirmed']
Mode: TypeAlias = Literal['false-positive', 'false-negative']
