import importlib
import inspect
import os
from typing import Any, Callable, Union


def absolute_ref(obj) -> str:
    return f'{obj.__module__}.{obj.__qualname__}'


def list_files(path: str) -> list[str]:
    """
    Example:
    >>> list_files('/root/fracmem/checks')
    ['__init__.py', 'fracops.py', 'testfn.py', 'volterra.py']
    """
    return sorted(f for f in os.listdir(path) if os.path.isfile(os.path.join(path, f)))


def module_functions(module_name: str) -> dict[str, Callable]:
    """
    Functions defined (not imported) in a module, in declaration order.
    Example:
    >>> module_functions('fracmem.checks.fracops')
    {'fracmem.checks.fracops.semigroup_power': <function semigroup_power at ...>, ...}
    """
    module = importlib.import_module(module_name)
    result: dict[str, Callable] = {}
    for obj in module.__dict__.values():
        if inspect.isfunction(obj) and obj.__module__ == module.__name__:
            result[absolute_ref(obj)] = obj
    return result


def scan_import(packages: tuple[Union[str, Callable], ...]) -> dict[str, Any]:
    """
    Example:
    >>> scan_import(('fracmem.checks',))
    {'fracmem.checks.fracops.semigroup_power': <function semigroup_power at ...>, ...}
    """
    result: dict[str, Any] = {}
    for package_name in packages:
        if not isinstance(package_name, str):
            obj = package_name
            assert inspect.isfunction(obj), f'{obj} is not a function'
            result[absolute_ref(obj)] = obj
            continue
        imported_module = importlib.import_module(package_name)
        spec = imported_module.__spec__
        if not (spec and spec.submodule_search_locations):
            result.update(module_functions(package_name))
            continue
        for filename in list_files(spec.submodule_search_locations[0]):
            if filename.endswith('.py') and filename != '__init__.py':
                result.update(module_functions(f'{package_name}.{filename[:-3]}'))
    return result
