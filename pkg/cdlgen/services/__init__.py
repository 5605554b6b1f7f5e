"""Pipeline services: library index, prompts, gateway, validation and orchestration."""
