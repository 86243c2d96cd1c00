# Training, evaluation and artifact services
