"""マニフェストを使うコマンドの共通処理"""
import argparse
import json
import sys
from typing import Any, Dict, Optional, Tuple

from domain.entities.experiment import ExperimentPlan
from infra.checkpoint.checkpoint_repository_impl import FileCheckpointRepository
from infra.files.bpe_repository_impl import FileBpeRepository
from infra.files.corpus_repository_impl import FileCorpusRepository
from interfaces.cli.schemas import RunManifest, dump_manifest, resolve_manifest
from usecases.experiment_service import ExperimentService, ExperimentSummary


def get_experiment_service(plan: ExperimentPlan) -> ExperimentService:
    """ExperimentService の組み立て"""
    return ExperimentService(
        FileCorpusRepository(plan.normalize),
        FileBpeRepository(),
        FileCheckpointRepository(),
    )


def add_manifest_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", required=True, help="YAML の実行マニフェスト")
    parser.add_argument("--output-dir", help="manifest の output_dir を上書き")
    parser.add_argument("--seed", type=int, help="manifest の seed を上書き")


def manifest_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    if args.seed is not None:
        overrides["seed"] = args.seed
    return overrides


def load_plan(args: argparse.Namespace, extra: Optional[Dict[str, Any]] = None) -> Tuple[RunManifest, ExperimentPlan, str]:
    """マニフェストを解決し、(RunManifest, ExperimentPlan, 解決済み YAML) を返す"""
    overrides = manifest_overrides(args)
    for key, value in (extra or {}).items():
        overrides[key] = value
    manifest = resolve_manifest(args.manifest, overrides)
    return manifest, manifest.to_entity(), dump_manifest(manifest)


def print_summary(summary: ExperimentSummary) -> None:
    sys.stdout.write(json.dumps(vars(summary), indent=2, sort_keys=True) + "\n")
