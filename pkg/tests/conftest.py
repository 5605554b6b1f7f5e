from __future__ import annotations

import socket
from typing import NoReturn

import pytest
import requests

from cdlgen.config import AppConfig, data_path, default_config_path, load_config
from cdlgen.services.library_index import LibraryIndex, build_index, load_rename_map
from cdlgen.services.tasks import ReferenceTask, load_reference_task


@pytest.fixture(scope="session")
def library() -> LibraryIndex:
    return build_index(
        data_path("library", "10.1.x"),
        "10.1.x",
        load_rename_map(data_path("library", "rename_map.tsv")),
    )


@pytest.fixture(scope="session")
def ci_config() -> AppConfig:
    return load_config(default_config_path())


@pytest.fixture(scope="session")
def task4() -> ReferenceTask:
    return load_reference_task("4")


class NetworkUsed(AssertionError):
    pass


@pytest.fixture
def no_network(monkeypatch: pytest.MonkeyPatch) -> None:
    """Fails the test on any attempt to open a socket or send an HTTP request."""

    def refuse(*_args: object, **_kwargs: object) -> NoReturn:
        raise NetworkUsed("test tried to reach the network")

    monkeypatch.setattr(socket, "socket", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)
    monkeypatch.setattr(requests.Session, "send", refuse)
    monkeypatch.setattr(requests, "post", refuse)
