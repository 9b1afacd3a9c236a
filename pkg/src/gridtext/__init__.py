"""gridtext: a textual gridworld with language-scored policies.

Procedurally generated grid episodes are rendered as templated sentences; a
policy scores each candidate action's token sequence under a pluggable backend
and samples from the normalized distribution. Online PPO and behavioral
cloning trainers drive the backends, optionally through a master/worker
scoring service, and an evaluation harness measures success rates and
vocabulary-shift generalization.
"""

__version__ = "0.1.0"
