#!/usr/bin/env python3
"""
Differential execution of an original corpus and one of its variants.

Both trees are compiled together with optional harness files, then run
on every input file (passed as ``argv[1]``). A variant is flagged when it
trips a memory-error detector the original does not trip: AddressSanitizer
when the compiler supports it, otherwise the stack protector.
"""

import os
import shutil
import logging
import tempfile
import subprocess
from enum import Enum
from dataclasses import dataclass
from typing import List, Optional, Sequence

from core.utils.errors import BuildFailure

logger = logging.getLogger(__name__)

SANITIZER_FLAGS = ["-fsanitize=address", "-fno-omit-frame-pointer"]
FALLBACK_FLAGS = ["-fstack-protector-all"]
MEMORY_ERROR_MARKERS = ("AddressSanitizer", "stack smashing detected", "buffer overflow detected")


class Verdict(Enum):
    BENIGN_IDENTICAL = "BenignIdentical"
    DIVERGENCE_DETECTED = "DivergenceDetected"
    SINK_VIOLATION = "SinkViolation"


@dataclass
class RunOutcome:
    exit_status: int
    stdout: str
    stderr: str
    timed_out: bool = False

    @property
    def memory_error(self) -> bool:
        return any(marker in self.stderr for marker in MEMORY_ERROR_MARKERS) or self.exit_status < 0


@dataclass
class InputVerdict:
    input_name: str
    verdict: Verdict
    original: RunOutcome
    variant: RunOutcome

    def to_dict(self):
        return {
            "input": self.input_name,
            "verdict": self.verdict.value,
            "original_exit": self.original.exit_status,
            "variant_exit": self.variant.exit_status,
        }


def find_compiler(compiler: str = "cc") -> Optional[str]:
    return shutil.which(compiler)


def c_sources(directory: str) -> List[str]:
    found = []
    for root, dirs, files in os.walk(directory):
        dirs[:] = sorted(d for d in dirs if not d.startswith("."))
        found.extend(os.path.join(root, f) for f in files if f.endswith((".c", ".i")))
    return sorted(found)


def build(sources: Sequence[str], output: str, compiler: str = "cc",
          cflags: Sequence[str] = ("-O0", "-g", "-w"), timeout: int = 120) -> str:
    """Compile and link ``sources`` into ``output``.

    Raises:
        BuildFailure: compiler missing, compilation failed or timed out;
            ``output`` on the exception carries the compiler's messages.
    """
    resolved = find_compiler(compiler)
    if resolved is None:
        raise BuildFailure(f"C compiler '{compiler}' not found")
    command = [resolved, *cflags, "-o", output, *sources]
    logger.debug(f"build: {' '.join(command)}")
    try:
        result = subprocess.run(command, capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired as e:
        raise BuildFailure(f"compiling {output} timed out after {timeout}s", str(e.stderr or "")) from e
    if result.returncode != 0:
        raise BuildFailure(f"compiling {os.path.basename(output)} failed", result.stdout + result.stderr)
    return output


def build_checked(sources: Sequence[str], output: str, compiler: str, cflags: Sequence[str]) -> str:
    """Build with AddressSanitizer, falling back to the stack protector."""
    try:
        return build(sources, output, compiler, [*cflags, *SANITIZER_FLAGS])
    except BuildFailure as e:
        logger.info(f"AddressSanitizer build failed, using the stack protector: {e}")
    return build(sources, output, compiler, [*cflags, *FALLBACK_FLAGS])


def run_binary(binary: str, input_path: str, timeout: int = 10) -> RunOutcome:
    env = dict(os.environ)
    env.setdefault("ASAN_OPTIONS", "detect_leaks=0")
    try:
        result = subprocess.run([binary, input_path], capture_output=True, text=True,
                                timeout=timeout, env=env, errors="replace")
    except subprocess.TimeoutExpired as e:
        return RunOutcome(exit_status=-9, stdout=str(e.stdout or ""), stderr=str(e.stderr or ""), timed_out=True)
    return RunOutcome(exit_status=result.returncode, stdout=result.stdout, stderr=result.stderr)


def judge(original: RunOutcome, variant: RunOutcome) -> Verdict:
    if variant.memory_error and not original.memory_error:
        return Verdict.SINK_VIOLATION
    if original.exit_status == variant.exit_status and original.stdout == variant.stdout \
            and not variant.memory_error:
        return Verdict.BENIGN_IDENTICAL
    return Verdict.DIVERGENCE_DETECTED


def verify_variant(original_dir: str, variant_dir: str, inputs_dir: str,
                   harness_files: Sequence[str] = (), compiler: str = "cc",
                   cflags: Sequence[str] = ("-O0", "-g", "-w"), run_timeout: int = 10) -> List[InputVerdict]:
    """Build original and variant and compare them on every file of ``inputs_dir``.

    Raises:
        BuildFailure: either tree does not compile.
    """
    inputs = sorted(f for f in os.listdir(inputs_dir)
                    if not f.startswith(".") and os.path.isfile(os.path.join(inputs_dir, f)))
    verdicts: List[InputVerdict] = []
    with tempfile.TemporaryDirectory(prefix="bugforge_verify_") as work:
        original_bin = build_checked(c_sources(original_dir) + list(harness_files),
                                     os.path.join(work, "original"), compiler, cflags)
        variant_bin = build_checked(c_sources(variant_dir) + list(harness_files),
                                    os.path.join(work, "variant"), compiler, cflags)
        for name in inputs:
            path = os.path.join(inputs_dir, name)
            original = run_binary(original_bin, path, run_timeout)
            variant = run_binary(variant_bin, path, run_timeout)
            verdict = judge(original, variant)
            logger.info(f"{name}: {verdict.value}")
            verdicts.append(InputVerdict(name, verdict, original, variant))
    return verdicts
