# keep this file empty to avoid eager imports that can fail at startup
