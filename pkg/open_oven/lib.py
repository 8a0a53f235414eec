import hashlib

from .const import DOMAIN, VERSION


def make_human_friendly(name: str) -> str:
    """Make a material or scenario key more human-readable."""
    parts = name.split("/")[-1]
    parts = parts.replace("_", " ").replace("-", " ")
    return parts.title()


def config_digest(raw: bytes, seed: int) -> str:
    """Hash the raw configuration bytes together with the seed."""
    digest = hashlib.sha256(raw)
    digest.update(f"\nseed={seed}".encode("ascii"))
    return digest.hexdigest()


def header_lines(digest: str) -> list[str]:
    """Comment header that opens every output file."""
    return [f"# {DOMAIN} {VERSION}", f"# config_sha256 {digest}"]
