from .app import ApiSession, Role, create_app

__all__ = ["ApiSession", "Role", "create_app"]
