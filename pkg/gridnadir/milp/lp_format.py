"""CPLEX LP files written through Pyomo.

Pyomo rewrites names that are not valid LP identifiers; the mapping from
written labels to model names is returned and stored next to the LP file.
"""

import json
import logging
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

from .model import MilpModel

LOGGER = logging.getLogger(__name__)

Mapping = Dict[str, Dict[str, str]]


def mapping_path(lp_path: Path) -> Path:
    """Location of the name mapping written next to an LP file."""
    return lp_path.with_suffix(".names.json")


def write_lp(
    model: MilpModel,
    destination: Union[str, Path],
    symbolic: bool = True,
) -> Tuple[str, Mapping]:
    """Write the model as an LP file; return its text and the name mapping.

    The mapping has "variables" and "constraints" tables from written labels
    to model names and holds only the names Pyomo changed.
    """
    destination = Path(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    _, symbol_map_id = model.block.write(
        str(destination),
        format="lp",
        io_options={"symbolic_solver_labels": symbolic},
    )
    symbol_map = model.block.solutions.symbol_map[symbol_map_id]
    mapping: Mapping = {"variables": {}, "constraints": {}}
    for table, components in (
        ("variables", model.variables),
        ("constraints", model.constraints),
    ):
        for component in components:
            label: Optional[str] = symbol_map.byObject.get(id(component))
            if label is not None and label != component.local_name:
                mapping[table][label] = component.local_name
    mapping_path(destination).write_text(
        json.dumps(mapping, indent=2, sort_keys=True) + "\n"
    )
    LOGGER.debug(
        "Wrote %s with %d renamed labels", destination, sum(map(len, mapping.values()))
    )
    return destination.read_text(), mapping
