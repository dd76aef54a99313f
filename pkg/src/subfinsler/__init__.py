"""Sub-Finsler heat kernel, fundamental solution and identity verification."""
