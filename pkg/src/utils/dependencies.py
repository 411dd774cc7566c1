import importlib.util
from typing import Optional
from utils.logger import LogLevel, Logger

DEPENDENCIES = [
    (
        "numpy",
        "NumPy",
        "- pip install numpy\n- Debian/Ubuntu: sudo apt install python3-numpy\n- Arch Linux: sudo pacman -S python-numpy",
    ),
    (
        "scipy",
        "SciPy (HiGHS linear programming)",
        "- pip install scipy\n- Debian/Ubuntu: sudo apt install python3-scipy\n- Arch Linux: sudo pacman -S python-scipy",
    ),
    (
        "networkx",
        "NetworkX (max-flow, matching, cycles)",
        "- pip install networkx\n- Debian/Ubuntu: sudo apt install python3-networkx\n- Arch Linux: sudo pacman -S python-networkx",
    ),
]


def check_dependency(
    module: str, name: str, install_instructions: str, logging: Logger
) -> Optional[str]:
    """Checks if a numeric backend is importable or not.

    Args:
        module (str): import name of the package
        name (str): the human readable name of the dependency
        install_instructions (str): the instruction used to install the package

    Returns:
        Optional[str]: Error message if dependency is missing, None otherwise
    """
    if importlib.util.find_spec(module) is None:
        error_msg = f"{name} is required but not installed!\n\nInstall it using:\n{install_instructions}"
        logging.log(LogLevel.Error, error_msg)
        return error_msg
    return None


def check_all_dependencies(logging: Logger) -> bool:
    """Checks if all dependencies exist or not.

    Returns:
        bool: returns false if there are dependencies missing, or return true
    """
    missing = [
        check_dependency(mod, name, inst, logging) for mod, name, inst in DEPENDENCIES
    ]
    missing = [msg for msg in missing if msg]
    return not missing
