"""Carrier mappings: which MAC transport each message type rides on.

A mapping scheme fixes, for one traffic direction, the carrier used by
interests, data, and availability indications.  Carriers are the beacon
payload, the beacon pending list followed by a contention-window unicast,
the contention access period, or granted CFP cells.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .mac import SuperframeConfig, build_static_schedule, Schedule

INTEREST_CARRIERS = ("BEACON-PAYLOAD", "BEACON-INDIRECT-CAP", "CAP", "CFP", "none")
DATA_CARRIERS = ("CAP", "CFP", "BEACON-PAYLOAD")
INDICATION_CARRIERS = ("none", "CAP", "CFP")


@dataclass(frozen=True, slots=True)
class MappingScheme:
    name: str
    direction: str  # "upstream" | "downstream"
    initiator: str  # "gateway" | "node"
    interest_carrier: str
    data_carrier: str
    indication_carrier: str = "none"
    push: bool = False

    def __post_init__(self) -> None:
        if self.direction not in ("upstream", "downstream"):
            raise ConfigError(f"unknown direction {self.direction!r}")
        if self.initiator not in ("gateway", "node"):
            raise ConfigError(f"unknown initiator {self.initiator!r}")
        if self.interest_carrier not in INTEREST_CARRIERS:
            raise ConfigError(f"unknown interest carrier {self.interest_carrier!r}")
        if self.data_carrier not in DATA_CARRIERS:
            raise ConfigError(f"unknown data carrier {self.data_carrier!r}")
        if self.indication_carrier not in INDICATION_CARRIERS:
            raise ConfigError(f"unknown indication carrier {self.indication_carrier!r}")
        if self.push:
            if self.interest_carrier != "none" or self.indication_carrier != "none":
                raise ConfigError("push traffic carries neither interests nor indications")
            if self.direction != "upstream" or self.initiator != "node":
                raise ConfigError("push traffic is node-initiated and upstream")
        else:
            if self.interest_carrier == "none":
                raise ConfigError("pull traffic needs an interest carrier")
        if self.indication_carrier != "none":
            if self.initiator != "node" or self.direction != "upstream":
                raise ConfigError("indications are node-initiated upstream signals")
            if self.interest_carrier not in ("CAP", "CFP"):
                raise ConfigError("indication schemes solicit via CAP or CFP interests")
        if self.data_carrier == "BEACON-PAYLOAD" and self.direction != "downstream":
            raise ConfigError("only downstream data can ride the beacon payload")
        if self.direction == "downstream":
            if self.initiator != "node":
                raise ConfigError("downstream traffic is requested by nodes")
            if self.push or self.indication_carrier != "none":
                raise ConfigError("downstream traffic uses plain interests")
        if self.interest_carrier in ("BEACON-PAYLOAD", "BEACON-INDIRECT-CAP"):
            if self.initiator != "gateway":
                raise ConfigError("beacon-borne interests originate at the gateway")

    @property
    def node_cap_rx(self) -> bool:
        """Nodes keep the radio on through every CAP to hear unicast interests."""
        return self.initiator == "gateway" and self.interest_carrier == "CAP"


@dataclass(frozen=True, slots=True)
class AllocationPlan:
    slots_per_node: int
    pattern: str
    roles: tuple[str, ...]

    def build(self, n_nodes: int, cfg: SuperframeConfig) -> Schedule:
        return build_static_schedule(
            n_nodes, self.slots_per_node, self.pattern, cfg, roles=self.roles
        )


_NO_CELLS = AllocationPlan(0, "unidirectional", ())
_UP = AllocationPlan(1, "unidirectional", ("up",))
_DOWN = AllocationPlan(1, "unidirectional", ("down",))
_BOTH_PAIR = AllocationPlan(1, "paired-tx-rx", ("both",))


def allocation_plan(scheme: MappingScheme) -> AllocationPlan:
    """CFP demand implied by the carriers a scheme uses."""
    if scheme.direction == "downstream":
        if scheme.data_carrier == "BEACON-PAYLOAD":
            return _UP  # uplink interests only; data rides beacons
        return AllocationPlan(2, "paired-tx-rx", ("up", "down"))
    if scheme.push:
        return _UP if scheme.data_carrier == "CFP" else _NO_CELLS
    if scheme.indication_carrier != "none":
        ind_cfp = scheme.indication_carrier == "CFP"
        data_cfp = scheme.data_carrier == "CFP"
        if ind_cfp and data_cfp:
            return AllocationPlan(2, "paired-tx-rx", ("both", "up"))
        if ind_cfp or data_cfp:
            return _BOTH_PAIR
        return _DOWN  # interests still arrive over granted downlink cells
    # gateway-initiated upstream pull
    int_cfp = scheme.interest_carrier == "CFP"
    data_cfp = scheme.data_carrier == "CFP"
    if int_cfp and data_cfp:
        return AllocationPlan(2, "paired-tx-rx", ("down", "up"))
    if int_cfp:
        return _DOWN
    if data_cfp:
        return _UP
    return _NO_CELLS


_PRESET_LIST = [
    MappingScheme("interest-beacon-data-cap", "upstream", "gateway", "BEACON-PAYLOAD", "CAP"),
    MappingScheme("interest-beacon-data-cfp", "upstream", "gateway", "BEACON-PAYLOAD", "CFP"),
    MappingScheme("interest-cap-data-cap", "upstream", "gateway", "CAP", "CAP"),
    MappingScheme("interest-cap-data-cfp", "upstream", "gateway", "CAP", "CFP"),
    MappingScheme("interest-cfp-data-cap", "upstream", "gateway", "CFP", "CAP"),
    MappingScheme("interest-cfp-data-cfp", "upstream", "gateway", "CFP", "CFP"),
    MappingScheme("indication-cap-data-cap", "upstream", "node", "CFP", "CAP", "CAP"),
    MappingScheme("indication-cap-data-cfp", "upstream", "node", "CFP", "CFP", "CAP"),
    MappingScheme("indication-cfp-data-cap", "upstream", "node", "CFP", "CAP", "CFP"),
    MappingScheme("indication-cfp-data-cfp", "upstream", "node", "CFP", "CFP", "CFP"),
    MappingScheme("push-cap", "upstream", "node", "none", "CAP", push=True),
    MappingScheme("push-cfp", "upstream", "node", "none", "CFP", push=True),
    MappingScheme("downstream-unicast", "downstream", "node", "CFP", "CFP"),
    MappingScheme("downstream-broadcast", "downstream", "node", "CFP", "BEACON-PAYLOAD"),
]

PRESETS: dict[str, MappingScheme] = {s.name: s for s in _PRESET_LIST}


def preset(name: str) -> MappingScheme:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown scheme {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None
