"""
Training runs: alternate collection and updates, evaluate on a fixed schedule,
write checkpoints `ckpt_<step>.json` plus a `best_sr.json` alias, and a CSV
log with one row per evaluation.
"""
import logging
import shutil
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from cannav.core.config import settings
from cannav.core.errors import ArtifactError, ConfigError
from cannav.core.seeding import TRAINER, eval_seeds, stream
from cannav.env.vec_env import VecEnv
from cannav.models.agent import NavigationAgent
from cannav.numeric.checkpoint import save_checkpoint
from cannav.numeric.optim import Adam, linear_lr
from cannav.schemas.artifact_schemas import ReportDocument
from cannav.schemas.config_schemas import RunConfig
from cannav.schemas.metrics_schemas import MetricsReport, TrainingLogRow
from cannav.services.artifact_service import ArtifactService, CsvLog, stamp_for
from cannav.services.bc_service import bc_update, sample_batch
from cannav.services.demo_service import load_demos
from cannav.services.evaluation_service import evaluate_policy
from cannav.services.ppo_service import PPOStats, ppo_update
from cannav.services.rollout_service import collect_rollouts, compute_gae

logger = logging.getLogger(__name__)

LOG_NAME = "train_log.csv"
LOG_COLUMNS = list(TrainingLogRow.model_fields)


@dataclass
class TrainingResult:
    output_dir: Path
    final_step: int
    best_sr: Optional[float]
    best_checkpoint: Path
    report: MetricsReport  # best-SR evaluation
    final_report: MetricsReport  # last evaluation
    log_path: Path


class TrainingService:
    """One training run writing into `config.output_dir` (or the given directory)."""

    def __init__(self, config: RunConfig, output_dir: Optional[Path] = None):
        self.config = config
        self.output_dir = Path(output_dir or config.output_dir)
        self.artifacts = ArtifactService(self.output_dir, stamp_for(config))
        self.agent = NavigationAgent(config)
        self.optimizer = Adam(self.agent.named_parameters())
        self.rng = stream(config.seed, TRAINER)
        self.eval_seeds = eval_seeds(config.eval.episodes, config.eval.seed_start)
        self.best_sr: Optional[float] = None
        self.best_report: Optional[MetricsReport] = None
        self.last_report: Optional[MetricsReport] = None
        self._started = time.monotonic()

    # ---- artifacts -------------------------------------------------------

    def checkpoint(self, step: int) -> Path:
        return save_checkpoint(
            self.output_dir / f"ckpt_{step}.json",
            self.agent.state_arrays(),
            optimizer=self.optimizer.state,
            stamp=self.artifacts.stamp,
            step=step,
            config=self.config.model_dump(mode="json"),
        )

    def _evaluate(self) -> MetricsReport:
        report, _ = evaluate_policy(
            self.agent.policy,
            self.config.env,
            self.eval_seeds,
            greedy=self.config.eval.greedy,
            allow_seed_overlap=self.config.eval.allow_seed_overlap,
        )
        return report

    def _evaluate_and_log(self, step: int, log: CsvLog, stats: dict, lr: float) -> None:
        report = self._evaluate()
        self.last_report = report
        row = TrainingLogRow(
            step=step,
            sr=report.sr,
            spl=report.spl,
            gd=report.gd,
            lr=lr,
            wall_time=round(time.monotonic() - self._started, 3) if settings.record_wall_time else 0.0,
            **stats,
        )
        log.append(row.model_dump())
        path = self.checkpoint(step)
        if self.best_sr is None or report.sr > self.best_sr:
            self.best_sr = report.sr
            self.best_report = report
            self._alias_best(path)
            logger.info(f"New best SR {report.sr:.3f} at step {step}")

    def _alias_best(self, path: Path) -> None:
        try:
            shutil.copyfile(path, self.output_dir / "best_sr.json")
        except OSError as e:
            raise ArtifactError(f"Failed to alias best checkpoint {path}: {e}") from e

    def _finish(self, step: int, log: CsvLog) -> TrainingResult:
        best = self.output_dir / "best_sr.json"
        final = self.last_report or self._evaluate()
        report = self.best_report or final
        self.artifacts.write_model(
            "report.json",
            ReportDocument.from_report(report, self.artifacts.stamp, checkpoint=best.name, step=step),
        )
        logger.info(f"Training finished at step {step}; best SR {self.best_sr}")
        return TrainingResult(self.output_dir, step, self.best_sr, best, report, final, log.path)

    # ---- loops -----------------------------------------------------------

    def run(self) -> TrainingResult:
        with self.artifacts:
            self.artifacts.write_json("config.json", self.config.model_dump(mode="json"))
            self._alias_best(self.checkpoint(0))
            log = self.artifacts.open_csv_log(LOG_NAME, LOG_COLUMNS, workers=settings.eval_workers)
            try:
                if self.config.trainer == "bc":
                    return self._run_bc(log)
                return self._run_ppo(log)
            except Exception as e:
                logger.error(f"Training aborted: {e}", exc_info=True)
                raise
            finally:
                log.close()

    def _run_ppo(self, log: CsvLog) -> TrainingResult:
        ppo = self.config.ppo
        logger.info(
            f"PPO run seed={self.config.seed} variant={self.config.agent.encoder_variant} "
            f"alpha={ppo.alpha} total_steps={ppo.total_steps}"
        )
        step = 0
        if ppo.total_steps == 0:
            return self._finish(step, log)
        envs = VecEnv(self.config.env, ppo.num_envs, self.config.seed)
        next_eval = self.config.eval.interval
        stats = PPOStats()
        lr = ppo.lr0
        while step < ppo.total_steps:
            buffer = collect_rollouts(self.agent.policy, envs, ppo.rollout_horizon)
            compute_gae(buffer, ppo.gamma, ppo.gae_lambda)
            lr = linear_lr(step, ppo.total_steps, ppo.lr0)
            stats = ppo_update(self.agent, buffer, self.optimizer, ppo, self.config.causal, lr, self.rng)
            step += len(buffer)
            if step >= next_eval:
                self._evaluate_and_log(step, log, _log_stats(stats), lr)
                while next_eval <= step:
                    next_eval += self.config.eval.interval
            elif step >= ppo.total_steps:
                self._evaluate_and_log(step, log, _log_stats(stats), lr)
        return self._finish(step, log)

    def _run_bc(self, log: CsvLog) -> TrainingResult:
        bc = self.config.bc
        if not bc.demos_path:
            raise ConfigError("bc.demos_path is required when trainer is 'bc'")
        _, demos = load_demos(bc.demos_path, self.config.env)
        logger.info(f"BC run seed={self.config.seed} alpha={bc.alpha} demos={len(demos)} updates={bc.updates}")
        update = 0
        while update < bc.updates:
            lr = linear_lr(update, bc.updates, bc.lr0)
            batch = sample_batch(demos, bc.batch_episodes, self.rng)
            stats = bc_update(self.agent, batch, self.optimizer, bc.alpha, self.config.causal, lr)
            update += 1
            if update % self.config.eval.interval == 0 or update == bc.updates:
                self._evaluate_and_log(
                    update,
                    log,
                    {
                        "policy_loss": stats.cross_entropy,
                        "value_loss": 0.0,
                        "entropy": 0.0,
                        "causal_loss": stats.causal_loss,
                    },
                    lr,
                )
        return self._finish(update, log)


def _log_stats(stats: PPOStats) -> dict:
    return {
        "policy_loss": stats.policy_loss,
        "value_loss": stats.value_loss,
        "entropy": stats.entropy,
        "causal_loss": stats.causal_loss,
    }


def train(config: RunConfig, output_dir: Optional[Path] = None) -> TrainingResult:
    return TrainingService(config, output_dir).run()
