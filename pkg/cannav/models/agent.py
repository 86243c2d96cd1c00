"""Policy network and causal understanding module trained as one parameter set."""
import logging
from pathlib import Path
from typing import Optional, Tuple, Union

from pydantic import ValidationError

from cannav.core.errors import CheckpointError
from cannav.core.seeding import POLICY_INIT, stream
from cannav.models.causal import CausalUnderstandingModule
from cannav.models.policy import NavigationPolicy
from cannav.numeric.checkpoint import load_checkpoint
from cannav.numeric.layers import Module
from cannav.numeric.optim import AdamState
from cannav.schemas.artifact_schemas import CheckpointDocument
from cannav.schemas.config_schemas import RunConfig

logger = logging.getLogger(__name__)


class NavigationAgent(Module):
    """Parameters are named `policy.*` and `causal.*`."""

    def __init__(self, config: RunConfig):
        super().__init__()
        self.config = config
        rng = stream(config.seed, POLICY_INIT)
        self.policy: NavigationPolicy = self.add_module("policy", NavigationPolicy(config.agent, config.env, rng))
        self.causal: CausalUnderstandingModule = self.add_module(
            "causal", CausalUnderstandingModule(config.agent.d_model, rng)
        )

    @classmethod
    def from_checkpoint(
        cls, path: Union[str, Path], config: Optional[RunConfig] = None
    ) -> Tuple["NavigationAgent", Optional[AdamState], CheckpointDocument]:
        """Rebuild an agent from a checkpoint; the embedded config is used unless one is given."""
        parameters, optimizer, document = load_checkpoint(path)
        if config is None:
            if document.config is None:
                raise CheckpointError(f"Checkpoint {path} carries no run config; pass one explicitly")
            try:
                config = RunConfig.model_validate(document.config)
            except ValidationError as e:
                raise CheckpointError(f"Checkpoint {path} holds an invalid run config: {e}") from e
        agent = cls(config)
        agent.load_state_arrays(parameters)
        logger.info(f"Loaded agent from {path} (step {document.step})")
        return agent, optimizer, document
