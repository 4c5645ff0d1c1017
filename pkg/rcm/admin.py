from django.contrib import admin

from .models import BenchRow, BenchRun


class BenchRowInline(admin.TabularInline):
    model = BenchRow
    extra = 0
    fields = [
        'instance_id', 'band', 'verdict', 'oracle_verdict',
        'trajectory_tokens', 'max_active_context', 'max_depth', 'steps', 'wall_time'
    ]
    readonly_fields = fields
    can_delete = False


@admin.register(BenchRun)
class BenchRunAdmin(admin.ModelAdmin):
    list_display = ['id', 'created_at', 'bands', 'variables', 'workers', 'row_count']
    list_filter = ['created_at']
    readonly_fields = ['created_at', 'summary']
    ordering = ['-created_at']
    inlines = [BenchRowInline]

    def row_count(self, obj):
        return obj.rows.count()
    row_count.short_description = 'Instances'

    def get_queryset(self, request):
        return super().get_queryset(request).prefetch_related('rows')


@admin.register(BenchRow)
class BenchRowAdmin(admin.ModelAdmin):
    list_display = [
        'instance_id', 'run', 'band', 'verdict', 'oracle_verdict',
        'trajectory_tokens', 'max_active_context'
    ]
    list_filter = ['band', 'verdict']
    search_fields = ['instance_id']
    ordering = ['run', 'instance_id']

    def get_queryset(self, request):
        return super().get_queryset(request).select_related('run')


admin.site.site_header = "Recursive Context Machines"
admin.site.site_title = "RCM Admin"
