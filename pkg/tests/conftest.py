import pytest

import vadkit
from vadkit.synthetic import write_fixture


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # compile the jitted kernels once so individual tests time only themselves
    vadkit.warmup()


@pytest.fixture(scope="session")
def small_fixture(tmp_path_factory):
    """A reduced synthetic corpus shared by the stage and CLI tests."""
    root = tmp_path_factory.mktemp("fixture")
    manifest_path = write_fixture(root, clips_per_class=3, frames_per_clip=18,
                                  short_clip_frames=10, seed=11)
    # fewer epochs than the shipped default keeps these tests quick
    cfg_path = root / "pipeline.cfg"
    text = cfg_path.read_text().replace("epochs = 8", "epochs = 4")
    cfg_path.write_text(text)
    return {"root": root, "manifest": manifest_path, "config": cfg_path}
