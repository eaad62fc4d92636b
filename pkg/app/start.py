import logging.config

import uvicorn

from app.settings import settings

if __name__ == '__main__':
    logging.config.fileConfig(settings.LOG_CONFIG, disable_existing_loggers=False)
    uvicorn.run(
        'app.main:app',
        host='0.0.0.0',
        port=settings.PORT,
        log_config=settings.LOG_CONFIG,
    )
