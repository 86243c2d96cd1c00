# Gridworld simulator, expert and environment collections
