"""
Configuration Setup Utility
Writes a fresh config/spconv.yaml with the built-in defaults
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

from modules.config import ConfigManager, DEFAULT_CONFIG_FILE, Settings  # noqa: E402


def setup_settings(config_dir: str = "config", force: bool = False) -> bool:
    """Create the default settings file unless one exists (or force is set)"""
    manager = ConfigManager(config_dir)
    target = manager.config_dir / DEFAULT_CONFIG_FILE
    if target.exists() and not force:
        print(f"  - {target} exists, leaving it untouched (use --force to overwrite)")
        return True

    ok = manager.save_settings(Settings(), DEFAULT_CONFIG_FILE)
    if ok:
        print(f"  ✓ {target}")
    return ok


def main(argv=None):
    """Main setup function"""
    argv = sys.argv[1:] if argv is None else argv
    print("=" * 60)
    print("spconv Configuration Setup")
    print("=" * 60)

    if not setup_settings(force="--force" in argv):
        print("❌ Error during setup")
        return 1

    print()
    print("Next steps:")
    print("  1. Edit config/spconv.yaml if needed")
    print("  2. Run: python main.py verify --grid small")
    return 0


if __name__ == "__main__":
    sys.exit(main())
