"""Subcommand names and the classes that handle them."""

from importlib import import_module
from typing import Type

from ..base import Command
from ..base.error import UsageError

SIMULATE = "simulate"
GEN_DATASET = "gen-dataset"
TRAIN_WODT = "train-wodt"
EVAL_WODT = "eval-wodt"
EFC = "efc"
PLAN = "plan"
REPORT = "report"

COMMAND_TYPES = {
    SIMULATE: "gridnadir.commands.simulate.Simulate",
    GEN_DATASET: "gridnadir.commands.dataset.GenDataset",
    TRAIN_WODT: "gridnadir.commands.wodt.TrainWodt",
    EVAL_WODT: "gridnadir.commands.wodt.EvalWodt",
    EFC: "gridnadir.commands.efc.Efc",
    PLAN: "gridnadir.commands.plan.Plan",
    REPORT: "gridnadir.commands.plan.Report",
}


def resolve(name: str) -> Type[Command]:
    """Command class registered under name."""
    try:
        module, _, attribute = COMMAND_TYPES[name].rpartition(".")
    except KeyError:
        raise UsageError("Unknown command {!r}".format(name)) from None
    return getattr(import_module(module), attribute)
