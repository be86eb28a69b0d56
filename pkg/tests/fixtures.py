"""Shared small instances."""

from pra.core import Assignment, instance_from_dict


def _p(pid, sex, arr, dis, private=False, reg=None):
    return {"id": pid, "sex": sex, "registration": arr if reg is None else reg,
            "arrival": arr, "discharge": dis, "private": private}


TWO_DOUBLES_DOC = {
    "name": "two-doubles",
    "horizon": 3,
    "ward": {"rooms": [{"id": "r1", "capacity": 2}, {"id": "r2", "capacity": 2}]},
    "patients": [
        _p("a", "M", 1, 2), _p("b", "M", 1, 2), _p("c", "F", 1, 3, private=True),
        _p("d", "F", 1, 4), _p("e", "F", 2, 4), _p("f", "M", 3, 4), _p("g", "M", 3, 4),
    ],
}

TWO_DOUBLES_ASSIGNMENT = {
    ("d", 1): "r1", ("c", 1): "r1", ("a", 1): "r2", ("b", 1): "r2",
    ("d", 2): "r1", ("e", 2): "r1", ("c", 2): "r2",
    ("d", 3): "r1", ("e", 3): "r1", ("f", 3): "r2", ("g", 3): "r2",
}


def two_doubles():
    return instance_from_dict(TWO_DOUBLES_DOC)


def two_doubles_assignment():
    return Assignment(dict(TWO_DOUBLES_ASSIGNMENT))


# two women pre-assigned together although a second double room is free:
# a lone private day needs a move, so P is infeasible while O is not
SHARED_PRE_DOC = {
    "name": "shared-pre",
    "horizon": 2,
    "ward": {"rooms": [{"id": "r1", "capacity": 2}, {"id": "r2", "capacity": 2}]},
    "patients": [
        _p("A", "F", 0, 3, private=True, reg=0), _p("W", "F", 0, 3, reg=0),
        _p("m", "M", 2, 3, reg=1),
    ],
    "pre_assignments": [{"patient": "A", "room": "r1"}, {"patient": "W", "room": "r1"}],
}


def shared_pre():
    return instance_from_dict(SHARED_PRE_DOC)
