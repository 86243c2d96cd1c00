# Core configuration, errors and seeding
