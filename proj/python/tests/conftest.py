import importlib.util
import pathlib
import sys

# fall back to the in-tree package when svem is not installed
if importlib.util.find_spec("svem") is None:
    sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1]))
