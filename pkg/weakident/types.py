from typing import Dict, List, Tuple, Union
from pathlib import Path
import numpy as np

# Explicit types
Array = np.ndarray
AxisId = str
MultiIndex = Tuple[int, ...]
DatasetPath = Union[Path, str]
ConfigValues = Dict[str, Union[int, float, bool, str, Tuple]]
TermList = List[Tuple["FeatureSpec", float]]  # noqa: F821
