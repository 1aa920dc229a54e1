"""Tests for EUREKA constants and packaging metadata."""

from pathlib import Path
import tomllib

from eureka import __version__
from eureka.const import (
    DEFAULT_ALPHA,
    DEFAULT_BENCH_NS,
    DEFAULT_COMPARISONS,
    DEFAULT_L2_LAMBDA,
    DIRECT_PROMPT,
    DIRECT_REPROMPT,
    EXIT_CONFIG_ERROR,
    EXIT_DATA_ERROR,
    EXIT_JUDGE_ERROR,
    EXIT_OK,
    PAIRWISE_PROMPT,
    PROMPT_TEMPLATE_VERSION,
    SYSTEM_PROMPT,
    TASK_PRESETS,
)


class TestConstants:
    """Test the constants defined in const.py."""

    def test_prompt_template_version(self):
        """Test the version tag that keys cached comparisons."""
        assert PROMPT_TEMPLATE_VERSION == "pairwise-v1"

    def test_experiment_defaults(self):
        """Test the default experiment protocol."""
        assert DEFAULT_COMPARISONS == 4096
        assert DEFAULT_BENCH_NS == (8, 16, 32, 64, 128, 256)
        assert DEFAULT_ALPHA == 0.05
        assert DEFAULT_L2_LAMBDA == 1e-4

    def test_exit_codes_are_distinct(self):
        """Test the command-line exit codes."""
        codes = [EXIT_OK, EXIT_CONFIG_ERROR, EXIT_DATA_ERROR, EXIT_JUDGE_ERROR]

        assert codes == [0, 2, 3, 4]

    def test_task_presets(self):
        """Test the benchmark task descriptions."""
        assert set(TASK_PRESETS) == {
            "occupancy",
            "twin_papers",
            "mammographic_mass",
            "breast_cancer_wisconsin",
            "adult",
            "website_phishing",
        }
        assert all(text.endswith(".") for text in TASK_PRESETS.values())


class TestPrompts:
    """Test that prompt templates format cleanly."""

    def test_pairwise_prompt(self):
        """Test the pairwise template placeholders."""
        text = PAIRWISE_PROMPT.format(
            label_name="Occupancy",
            name_a="Light",
            description_a="lux",
            name_b="CO2",
            description_b="ppm",
        )

        assert "Feature A: Light (lux)" in text
        assert "Feature B: CO2 (ppm)" in text
        assert "{" not in text

    def test_system_and_direct_prompts(self):
        """Test the remaining templates."""
        system = SYSTEM_PROMPT.format(task_description="Task.", label_name="y")
        direct = DIRECT_PROMPT.format(label_name="y", feature_lines="- a: a")
        reprompt = DIRECT_REPROMPT.format(names="a, b")

        assert "Task." in system
        assert "- a: a" in direct
        assert reprompt.endswith("a, b")


class TestVersionConsistency:
    """Test version consistency across files."""

    def test_pyproject_version_matches_package(self):
        """Test that pyproject.toml version matches eureka.__version__."""
        pyproject_path = Path(__file__).parent.parent / "pyproject.toml"
        with open(pyproject_path, "rb") as f:
            pyproject = tomllib.load(f)

        assert pyproject["project"]["version"] == __version__

    def test_console_script(self):
        """Test that the command-line entry point is declared."""
        pyproject_path = Path(__file__).parent.parent / "pyproject.toml"
        with open(pyproject_path, "rb") as f:
            pyproject = tomllib.load(f)

        assert pyproject["project"]["scripts"]["eureka"] == "eureka.cli:main"
