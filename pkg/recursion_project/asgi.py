"""
ASGI config for recursion_project project.
"""

import os
import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'recursion_project.settings')

django.setup()

from django.core.asgi import get_asgi_application
from channels.routing import ProtocolTypeRouter, URLRouter
from channels.auth import AuthMiddlewareStack
from rcm.routing import websocket_urlpatterns

django_app = get_asgi_application()

application = ProtocolTypeRouter({
    "http": django_app,
    "websocket": AuthMiddlewareStack(
        URLRouter(websocket_urlpatterns)
    ),
})
