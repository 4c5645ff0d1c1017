# Generated by Django 4.2.7 on 2026-10-19 09:40

from django.db import migrations, models
import django.db.models.deletion
import django.utils.timezone


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='BenchRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('created_at', models.DateTimeField(default=django.utils.timezone.now)),
                ('bands', models.JSONField(blank=True, default=list)),
                ('workers', models.PositiveIntegerField(default=1)),
                ('variables', models.PositiveIntegerField(default=0)),
                ('summary', models.JSONField(blank=True, default=list)),
            ],
            options={
                'db_table': 'rcm_bench_runs',
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='BenchRow',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('instance_id', models.CharField(max_length=255)),
                ('band', models.CharField(db_index=True, max_length=32)),
                ('verdict', models.CharField(max_length=64)),
                ('oracle_verdict', models.CharField(max_length=8)),
                ('trajectory_tokens', models.PositiveIntegerField()),
                ('max_active_context', models.PositiveIntegerField()),
                ('max_depth', models.PositiveIntegerField()),
                ('steps', models.PositiveIntegerField()),
                ('wall_time', models.FloatField()),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='rows', to='rcm.benchrun')),
            ],
            options={
                'db_table': 'rcm_bench_rows',
                'ordering': ['run', 'instance_id'],
                'indexes': [models.Index(fields=['run', 'band'], name='rcm_bench_run_band_idx')],
                'unique_together': {('run', 'instance_id')},
            },
        ),
    ]
