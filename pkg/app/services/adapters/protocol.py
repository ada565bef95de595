# app/services/adapters/protocol.py
"""Message bodies exchanged with external renderer, OCR and detector adapters."""

from typing import Any, Dict, List, Type, TypeVar

from pydantic import BaseModel, Field, ValidationError

from app.core.errors import AdapterError, ProtocolError

T = TypeVar("T", bound=BaseModel)


class OcrBox(BaseModel):
    text: str
    x0: float
    y0: float
    x1: float
    y1: float
    conf: float = 1.0


class OcrResponse(BaseModel):
    spans: List[OcrBox] = Field(default_factory=list)


class DetectBox(BaseModel):
    x0: float
    y0: float
    x1: float
    y1: float
    score: float = 1.0


class DetectResponse(BaseModel):
    boxes: List[DetectBox] = Field(default_factory=list)


class RenderResponse(BaseModel):
    image: str
    width_pt: float = Field(gt=0)
    height_pt: float = Field(gt=0)


def parse_response(model: Type[T], data: Any, adapter: str = "adapter") -> T:
    if isinstance(data, dict) and data.get("error"):
        raise AdapterError(f"{adapter} reported an error: {data['error']}")
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise ProtocolError(f"{adapter} sent a malformed {model.__name__}: {exc}") from exc


def ocr_request(image: str, dpi: int) -> Dict[str, Any]:
    return {"op": "ocr", "image": image, "dpi": dpi}


def detect_request(image: str) -> Dict[str, Any]:
    return {"op": "detect", "image": image}


def render_request(pdf: str, page: int, dpi: int, out: str) -> Dict[str, Any]:
    return {"op": "render", "pdf": pdf, "page": page, "dpi": dpi, "out": out}
