import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI

from app.api.errors import register_exception_handlers
from app.api.routes import router
from app.infra.device import configure_determinism
from app.settings import settings

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    configure_determinism(settings.DETERMINISTIC)
    logger.info('[render] serving checkpoint %s', settings.CHECKPOINT_PATH)
    yield


app = FastAPI(lifespan=lifespan)

app.include_router(router)

register_exception_handlers(app)


@app.get('/', tags=['health'])
async def healthcheck():
    return {'status': 'ok', 'checkpoint': settings.CHECKPOINT_PATH}
