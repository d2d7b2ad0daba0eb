"""simulate: frequency response of one area after an imbalance."""

from argparse import ArgumentParser
import logging
from pathlib import Path
from typing import ClassVar, Optional

import pandas as pd
from pydantic import Field
from typing_extensions import Annotated

from .. import sfr
from ..base import Command, RunContext
from .command_types import SIMULATE

LOGGER = logging.getLogger(__name__)


class Simulate(Command):
    """Simulate an area model and write the trace."""

    command_name: ClassVar[str] = SIMULATE

    model: Annotated[Path, Field(description="AreaDynamicModel JSON")]
    imbalance: Annotated[float, Field(description="Initial imbalance, MW")]
    epc: Annotated[float, Field(description="EPC injection, MW")] = 0.0
    dlc: Annotated[float, Field(description="DLC power, MW", ge=0)] = 0.0
    epc_delay: Annotated[float, Field(ge=0)] = 0.2
    dlc_delay: Annotated[float, Field(ge=0)] = 0.6
    dt: Annotated[float, Field(gt=0)] = sfr.DEFAULT_DT
    horizon: Annotated[float, Field(gt=0)] = sfr.DEFAULT_HORIZON
    out: Path
    compare_out: Optional[Path] = None
    delays_out: Optional[Path] = None

    @classmethod
    def configure_parser(cls, parser: ArgumentParser):
        """Add simulate arguments."""
        parser.add_argument("--model", type=Path, required=True)
        parser.add_argument("--imbalance", type=float, required=True)
        parser.add_argument("--epc", type=float, default=0.0)
        parser.add_argument("--dlc", type=float, default=0.0)
        parser.add_argument("--epc-delay", type=float, default=0.2)
        parser.add_argument("--dlc-delay", type=float, default=0.6)
        parser.add_argument("--dt", type=float, default=sfr.DEFAULT_DT)
        parser.add_argument("--horizon", type=float, default=sfr.DEFAULT_HORIZON)
        parser.add_argument("--out", type=Path, required=True)
        parser.add_argument(
            "--compare-out",
            type=Path,
            help="Also write the no/DLC/EPC/both comparison table here",
        )
        parser.add_argument(
            "--delays-out", type=Path, help="Also write the delay sweep table here"
        )

    @property
    def output_dir(self) -> Path:
        """Directory of the trace."""
        return self.out.parent

    async def handle(self, context: RunContext):
        """Run the simulation."""
        await super().handle(context)
        context.record_input("model", self.model)
        model = sfr.AreaDynamicModel.from_file(self.model)
        efc = sfr.EfcAction(
            epc_power=self.epc,
            dlc_power=self.dlc,
            epc_delay=self.epc_delay,
            dlc_delay=self.dlc_delay,
        )
        trace = sfr.simulate(model, self.imbalance, efc, dt=self.dt, horizon=self.horizon)
        value, at = sfr.nadir(trace)
        LOGGER.info("Nadir %.4f Hz at %.3f s", value, at)
        context.record_artifact(sfr.write_trace(trace, self.out))

        if self.compare_out:
            results = sfr.compare_efc_configurations(
                model,
                self.imbalance,
                self.epc,
                self.dlc,
                self.epc_delay,
                self.dlc_delay,
                dt=self.dt,
                horizon=self.horizon,
            )
            frame = pd.DataFrame.from_dict(results, orient="index")
            frame.index.name = "configuration"
            self.compare_out.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(self.compare_out, float_format="%.10g", lineterminator="\n")
            context.record_artifact(self.compare_out)

        if self.delays_out:
            rows = sfr.delay_sensitivity(
                model, self.imbalance, efc, dt=self.dt, horizon=self.horizon
            )
            self.delays_out.parent.mkdir(parents=True, exist_ok=True)
            pd.DataFrame(rows).to_csv(
                self.delays_out, index=False, float_format="%.10g", lineterminator="\n"
            )
            context.record_artifact(self.delays_out)
