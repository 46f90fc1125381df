from django.contrib import admin
from django.urls import path

#Run history is browsed through the admin only
urlpatterns = [
    path('admin/', admin.site.urls),
]
