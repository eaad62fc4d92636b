import asyncio

from fastapi import APIRouter, Depends, Response

from app.api.dto import CheckpointOut
from app.api.requests import RenderIn
from app.domain.enums import RenderKind
from app.geometry.se3 import pose_from_euler
from app.infra.service import get_renderer_singleton, get_sidecar
from app.services.evaluation_service import Renderer
from app.utils.images import depth_to_uint16, encode_png, to_uint8

router = APIRouter()


def _render_png(renderer: Renderer, body: RenderIn) -> bytes:
    pose = pose_from_euler(*body.pose) if body.pose is not None else None
    view = renderer.render_view(body.time, pose_override=pose, stride=body.stride)
    if body.kind == RenderKind.DEPTH:
        cam = renderer.camera
        return encode_png(depth_to_uint16(view.depth, cam.near, cam.far))
    return encode_png(to_uint8(view.image))


@router.post('/renders', response_class=Response)
async def post_renders(
    body: RenderIn, renderer: Renderer = Depends(get_renderer_singleton)
):
    # rendering is CPU/GPU bound; keep the event loop free
    png = await asyncio.to_thread(_render_png, renderer, body)
    return Response(content=png, media_type='image/png')


@router.get('/checkpoint', response_model=CheckpointOut)
async def get_checkpoint(sidecar: dict = Depends(get_sidecar)):
    return CheckpointOut.model_validate(sidecar)
