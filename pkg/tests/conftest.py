import pytest

from wasmk.embedding import ENGINES, load_program


def run(wat, name="main", args=(), engine="fast", limits=None, **options):
    """Load ``wat`` on a fresh store and call ``name``; returns (outcome, program)."""
    prog = load_program(wat, limits, record_events=True)
    return prog.call(name, args, engine=engine, **options), prog


@pytest.fixture(params=ENGINES)
def engine(request):
    return request.param


def func_index(prog, name):
    module = prog.inst.module
    for i, f in enumerate(module.funcs):
        if f.name == name:
            return i + len(module.imports)
    raise KeyError(name)


def thread_schedule(prog):
    """Order in which green threads are resumed, rebuilt from observer events.

    A capture by ``$save_fk_restore`` is a new thread's first stack; any other
    capture suspends whatever is running.  IDs are reused, so labels are
    reassigned at every capture.
    """
    new_thread = func_index(prog, "$save_fk_restore")
    labels, current, resumed, threads = {}, "main", [], 0
    for event, info in prog.events:
        if event == "control":
            if info["handler"] == new_thread:
                threads += 1
                labels[info["kappa"]] = f"T{threads}"
            else:
                labels[info["kappa"]] = current
        elif event == "restore":
            current = labels[info["kappa"]]
            if current != "main":
                resumed.append(current)
    return resumed
