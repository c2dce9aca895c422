import asyncio
import threading

import pytest
from aiohttp import web

from doccategorizer.config import load_config
from doccategorizer.evaluation import synthetic_corpus
from doccategorizer.repository import Repository
from doccategorizer.service import create_app

# small enough that a cnn epoch over a few dozen documents takes well under a second
TINY_SETTINGS = dict(max_timesteps=30, batch_size=16, filter_count=4, filter_lens=(1, 2), dense_size=8,
                     dropout_rate=0.1, epochs=2, prefetch=False)


@pytest.fixture(scope="session")
def small_corpus():
    """Three well separated classes, ten documents each, 8-dimensional embeddings."""
    return synthetic_corpus(k=3, n_per_class=10, vocab_size=60, overlap=0.1, doc_len=30, seed=1, dim=8)


@pytest.fixture
def tiny_settings():
    return dict(TINY_SETTINGS)


@pytest.fixture
def data_root(tmp_path):
    return str(tmp_path / "data")


@pytest.fixture
def repository(data_root):
    repo = Repository(data_root)
    yield repo
    repo.close()


class ServiceThread:
    """Runs an aiohttp application on an ephemeral port in a background event loop."""

    def __init__(self, app: web.Application):
        self.app = app
        self.loop = asyncio.new_event_loop()
        self.ready = threading.Event()
        self.port = None
        self.thread = threading.Thread(target=self._run, daemon=True)

    def _run(self):
        asyncio.set_event_loop(self.loop)
        runner = web.AppRunner(self.app)
        self.loop.run_until_complete(runner.setup())
        site = web.TCPSite(runner, "127.0.0.1", 0)
        self.loop.run_until_complete(site.start())
        self.port = runner.addresses[0][1]
        self.ready.set()
        self.loop.run_forever()
        self.loop.run_until_complete(runner.cleanup())
        self.loop.close()

    def start(self) -> str:
        self.thread.start()
        if not self.ready.wait(30):
            raise RuntimeError("service did not start")
        return f"http://127.0.0.1:{self.port}"

    def stop(self):
        self.loop.call_soon_threadsafe(self.loop.stop)
        self.thread.join(60)


@pytest.fixture
def start_service(data_root, small_corpus):
    """Factory: start a fresh service with the given config overrides, returns its base url."""
    threads = []

    def start(**overrides) -> str:
        values = dict(DATA_ROOT=data_root, WORKERS=1, TRAINING_DEFAULTS=dict(TINY_SETTINGS, epochs=3),
                      CLASSIFY_TIMEOUT=60.0)
        values.update(overrides)
        config = load_config(environ={}, **values)
        service = ServiceThread(create_app(config, embedding_model=small_corpus.embeddings))
        threads.append(service)
        return service.start()

    yield start
    for service in threads:
        service.stop()
