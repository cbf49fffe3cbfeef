"""Guest leaf packages: locating and loading `package.mfpkg` manifests.

A manifest names one package and lists the guest source files to preload
into an interpreter before leaves from that package execute:

    name = demo_kernels
    version = 1.0
    source = kernels.py

Search directories come from the MINIFLOW_GUEST_PATH environment variable
(os.pathsep separated) unless an explicit path list is given; each entry is
checked for a manifest directly and one level of subdirectories.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

from .errors import PackageError

MANIFEST_NAME = "package.mfpkg"
GUEST_PATH_ENV = "MINIFLOW_GUEST_PATH"


@dataclass(frozen=True)
class GuestPackage:
    name: str
    version: str
    sources: tuple[Path, ...]

    def read_sources(self) -> list[str]:
        return [path.read_text(encoding="utf-8") for path in self.sources]


def parse_manifest(path: Path) -> GuestPackage:
    name = version = None
    sources: list[Path] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise PackageError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key = key.strip()
        value = value.strip()
        if key == "name":
            name = value
        elif key == "version":
            version = value
        elif key == "source":
            source = (path.parent / value).resolve()
            if not source.is_file():
                raise PackageError(f"{path}:{lineno}: source file {value!r} not found")
            sources.append(source)
        else:
            raise PackageError(f"{path}:{lineno}: unknown manifest key {key!r}")
    if name is None or version is None:
        raise PackageError(f"{path}: manifest must define both name and version")
    if not sources:
        raise PackageError(f"{path}: manifest lists no source files")
    return GuestPackage(name, version, tuple(sources))


def guest_search_paths(explicit=None) -> list[Path]:
    if explicit is not None:
        entries = list(explicit)
    else:
        raw = os.environ.get(GUEST_PATH_ENV, "")
        entries = [e for e in raw.split(os.pathsep) if e]
    return [Path(e) for e in entries]


def find_package(name: str, version: str, search_paths=None) -> GuestPackage:
    """Locate a (name, version) package along the guest path."""
    candidates: list[Path] = []
    for root in guest_search_paths(search_paths):
        direct = root / MANIFEST_NAME
        if direct.is_file():
            candidates.append(direct)
        if root.is_dir():
            for child in sorted(root.iterdir()):
                manifest = child / MANIFEST_NAME
                if manifest.is_file():
                    candidates.append(manifest)
    for manifest in candidates:
        pkg = parse_manifest(manifest)
        if pkg.name == name and pkg.version == version:
            return pkg
    searched = os.pathsep.join(str(p) for p in guest_search_paths(search_paths)) or "<empty>"
    raise PackageError(
        f"guest package {name!r} version {version!r} not found "
        f"(searched {GUEST_PATH_ENV}={searched})")
