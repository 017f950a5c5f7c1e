from core.verify.harness import InputVerdict, RunOutcome, Verdict, build, find_compiler, judge, verify_variant

__all__ = ["InputVerdict", "RunOutcome", "Verdict", "build", "find_compiler", "judge", "verify_variant"]
