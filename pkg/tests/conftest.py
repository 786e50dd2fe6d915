import pytest

from motionforge.backends import Gateway, SyntheticBackends
from motionforge.backends.protocol import CAPABILITIES
from motionforge.corpus import build_scenes, corpus_config
from motionforge.store import JobStore
from motionforge.synth import render
from motionforge.workers import PIPELINE_STAGES, seed_video, worker_loop


@pytest.fixture(scope="session")
def corpus_scenes():
    """All 12 fixture scenes, rendered once per test session."""
    return {spec.scene_id: render(spec) for spec in build_scenes()}


def run_full_pipeline(data_root, scenes, cfg=None):
    """Drive every stage in-process with synthetic backends."""
    cfg = cfg or corpus_config(str(data_root))
    cfg.store.data_root = str(data_root)
    data_root.mkdir(parents=True, exist_ok=True)
    synth = SyntheticBackends(scenes, media_root=data_root)
    gateway = Gateway({k: synth for k in CAPABILITIES}, backoff=0.01)
    store = JobStore(cfg.store.db_path)
    for sid, rendered in sorted(scenes.items()):
        seed_video(store, sid, rendered.spec.category)
    store.close()
    for stage in PIPELINE_STAGES:
        worker_loop(cfg.store.db_path, stage, "w0", gateway, data_root, cfg)
    return cfg


@pytest.fixture(scope="session")
def pipeline_run(tmp_path_factory, corpus_scenes):
    """One full corpus pipeline run shared by integration tests (read-only)."""
    data_root = tmp_path_factory.mktemp("pipeline") / "data"
    cfg = run_full_pipeline(data_root, corpus_scenes)
    return cfg, data_root
