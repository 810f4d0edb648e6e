from typing import Optional, Dict, Any
import platform
import subprocess
import psutil


def collect_host_facts() -> Dict[str, Any]:
    """Static host description recorded in run manifests."""
    memory = psutil.virtual_memory()
    return {
        'platform': platform.platform(),
        'python': platform.python_version(),
        'cpu_count_logical': psutil.cpu_count(logical=True),
        'cpu_count_physical': psutil.cpu_count(logical=False),
        'memory_total_bytes': memory.total,
    }


def get_current_revision(repo_path: Optional[str] = None) -> Optional[str]:
    """Commit hash of the checkout, or None outside a git work tree"""
    cmd = ["git", "rev-parse", "HEAD"]

    if repo_path:
        cmd = ["git", "-C", repo_path] + cmd[1:]

    try:
        result = subprocess.run(
            cmd,
            capture_output=True,
            text=True,
            check=True,
            timeout=5
        )
    except (OSError, subprocess.SubprocessError):
        return None
    return result.stdout.strip() or None
