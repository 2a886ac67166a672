import numpy as np
import pytest

from hearthlab.activity import load_catalog
from hearthlab.goals import And, ForAll, ForAtLeastOne, Lit, Not
from hearthlab.world import Atom, ObjectDef, Scene, WorldState

KITCHEN_OBJECTS = (
    ObjectDef("top_cabinet_47", "cabinet", frozenset({"openable", "container"})),
    ObjectDef("bottom_cabinet_41", "cabinet", frozenset({"openable", "container"})),
    ObjectDef("countertop_26", "countertop", frozenset({"surface"})),
    ObjectDef("bath_towel_0", "bath_towel", frozenset({"graspable", "cleaning_tool"})),
    ObjectDef("soap_0", "soap", frozenset({"graspable"})),
    ObjectDef("bowl_0", "bowl", frozenset({"graspable"})),
    ObjectDef("bowl_1", "bowl", frozenset({"graspable"})),
    ObjectDef("cup_0", "cup", frozenset({"graspable"})),
    ObjectDef("cup_1", "cup", frozenset({"graspable"})),
    ObjectDef("room_floor_kitchen_0", "floor", frozenset({"surface"})),
)


def A(kind, *args):
    return Atom.of(kind, *args)


@pytest.fixture(scope="session")
def kitchen_scene():
    return Scene(KITCHEN_OBJECTS)


@pytest.fixture(scope="session")
def kitchen_state():
    """Example cupboard initial state, minus the inverse-relation sentences."""
    return WorldState.of([
        A("dusty", "top_cabinet_47"), A("nextto", "top_cabinet_47", "cup_1"),
        A("dusty", "bottom_cabinet_41"), A("nextto", "bottom_cabinet_41", "cup_0"),
        A("nextto", "bottom_cabinet_41", "bowl_1"),
        A("under", "countertop_26", "bath_towel_0"), A("inreach", "countertop_26"),
        A("insameroom", "countertop_26"),
        A("ontop", "bath_towel_0", "countertop_26"), A("inreach", "bath_towel_0"),
        A("ontop", "soap_0", "countertop_26"), A("inreach", "soap_0"),
        A("ontop", "bowl_0", "countertop_26"), A("inreach", "bowl_0"),
        A("inside", "bowl_1", "bottom_cabinet_41"), A("nextto", "bowl_1", "bottom_cabinet_41"),
        A("inside", "cup_0", "bottom_cabinet_41"), A("nextto", "cup_0", "bottom_cabinet_41"),
        A("inside", "cup_1", "top_cabinet_47"), A("nextto", "cup_1", "top_cabinet_47"),
        A("inreach", "room_floor_kitchen_0"), A("infov", "room_floor_kitchen_0"),
        A("inreach", "top_cabinet_47"), A("inreach", "bottom_cabinet_41"),
        A("inreach", "cup_0"), A("inreach", "cup_1"), A("inreach", "bowl_1"),
    ])


@pytest.fixture(scope="session")
def cupboard_goal():
    """Dust every cabinet; bowls in one cabinet, cups in the other."""
    return And((
        ForAll("cabinet", "c", Not(Lit("dusty", ("c",)))),
        ForAtLeastOne("cabinet", "c", ForAll("bowl", "b", And((
            Lit("inside", ("b", "c")), Not(Lit("inside", ("cup_1", "c"))))))),
        ForAtLeastOne("cabinet", "c", ForAll("cup", "u", And((
            Lit("inside", ("u", "c")), Not(Lit("inside", ("bowl_1", "c"))))))),
    ))


@pytest.fixture(scope="session")
def catalog():
    return {a.alias: a for a in load_catalog()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion
_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        name = report.nodeid.split("::")[-1].split("[")[0]
        prev = _acceptance.get(name)
        if prev is None or prev == "PASS":
            _acceptance[name] = "PASS" if report.outcome == "passed" else report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_acceptance.items()):
        terminalreporter.write_line(f"{outcome:<7} {name}")
