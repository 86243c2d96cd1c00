# Navigation policy and causal understanding module
