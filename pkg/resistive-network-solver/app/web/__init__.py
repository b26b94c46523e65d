"""
HTTP API routes
"""
from app.web.routes import router

__all__ = ["router"]
